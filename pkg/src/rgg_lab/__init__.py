"""rgg-lab: a laboratory for high-dimensional random geometric graphs."""
