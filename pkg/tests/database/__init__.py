# database tests
