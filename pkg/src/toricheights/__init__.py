"""Heights of toric varieties over ℚ and cyclotomic fields: polytopes, concave calculus, Ronkin functions."""
__version__ = "0.1.0"
