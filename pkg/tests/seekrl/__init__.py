# seekrl tests
