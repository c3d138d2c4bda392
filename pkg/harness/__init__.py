# Training/evaluation driver, persistence and command-line interface
