"""A calculus for nested data types with a finite parametric model."""
