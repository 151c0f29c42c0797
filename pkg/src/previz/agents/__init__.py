"""Role-based agent protocols over pluggable text backends."""
