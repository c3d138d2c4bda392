# beliefnet tests
