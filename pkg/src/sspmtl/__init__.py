"""Sound speed profile inversion toolkit."""
