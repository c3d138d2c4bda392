# infoseek test suite
