"""Exception types shared across the harness."""


class VilbenchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(VilbenchError):
    """A scenario/stage configuration is invalid."""


class MalformedMap(ConfigError):
    """Map file does not parse or is missing required fields."""


class DegenerateMap(ConfigError):
    """Map parses but violates path invariants (too few / duplicate points)."""


class ParticipantMissing(VilbenchError):
    """A registered synchronous participant never reported for the tick."""


class DuplicateActor(VilbenchError):
    """An actor with the requested id already exists in the world."""


class PayloadTooLong(VilbenchError):
    """E2E frame payload exceeds the 64-byte limit."""


class IllegalTransition(VilbenchError):
    """Rejected gateway mode request; state is unchanged."""


class OffTrack(VilbenchError):
    """Ego is too far from the centerline for planning to make sense."""


class NoTriggers(VilbenchError):
    """Latency statistics requested on a log with no emergency-brake triggers."""


class PeerUnreachable(VilbenchError):
    """A remote stage peer could not be reached or died mid-run."""


class ProtocolViolation(VilbenchError):
    """A wire message arrived out of lockstep order or malformed."""


class ScenarioDiverged(VilbenchError):
    """Run terminated early: ego off track or collision with the lead."""


class DivergenceFound(VilbenchError):
    """Replay of a run log produced a different row."""

    def __init__(self, tick: int, expected: str, actual: str):
        self.tick = tick
        self.expected = expected
        self.actual = actual
        super().__init__(f"replay diverged at tick {tick}")
