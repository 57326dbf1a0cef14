"""Per-agent simulation state."""

from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional, Set

from src.models.data_models import LocationVector, MobilityDiary


@dataclass
class AgentState:
    """
    Mutable state of one agent.

    ``version`` increases on every visit so cached similarities involving the
    agent can be recognised as stale.
    """

    id: int
    home: int
    current: int
    next_event: datetime
    lv: LocationVector = field(default_factory=LocationVector)
    diary: Optional[MobilityDiary] = None
    cursor: int = 1
    run_used: Set[int] = field(default_factory=set)
    last_wait_hours: float = 0.0
    last_move: Optional[datetime] = None
    version: int = 0

    @property
    def S(self) -> int:
        return self.lv.distinct

    def visit(self, location: int) -> bool:
        """Record a visit and move there; True when the location is new."""
        new = self.lv.add(location)
        self.current = location
        self.version += 1
        return new

    def has_diary_entries(self) -> bool:
        return self.diary is not None and self.cursor < len(self.diary)
