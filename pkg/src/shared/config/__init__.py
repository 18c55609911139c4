"""Runtime settings of the toolkit."""
