"""End-to-end reproduction of the toolkit's language identities."""
