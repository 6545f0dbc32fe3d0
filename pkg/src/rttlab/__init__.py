"""Exact verification engine for RTT and reflection-equation quantum algebras."""
