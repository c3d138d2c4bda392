# Run ledger: experiment runs and their events
