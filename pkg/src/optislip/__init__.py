"""Data-driven optimal-slip estimation for braking on varying road surfaces."""
