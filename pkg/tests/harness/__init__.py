# harness tests
