"""Small shared helpers: seeded random streams, sharded execution and distribution statistics."""
