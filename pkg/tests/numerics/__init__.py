# numerics tests
