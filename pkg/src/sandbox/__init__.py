"""Query sandbox, identity binding, owner guards and the reference monitor."""
