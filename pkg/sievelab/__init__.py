"""sievelab: numerical core of a Harman-sieve study of primes in progressions to large moduli."""

__version__ = "0.0.1"
