"""Best constants of weighted iterated Hardy-type inequalities and a
brute-force discrete oracle to check them."""

__version__ = "0.1.0"
