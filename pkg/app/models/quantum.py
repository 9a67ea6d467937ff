from enum import Enum

# Qubit labels name spatial modes, e.g. "a1" (Alice's half of source 1) or "b3".
QubitId = str


class MeasBasis(str, Enum):
    COMPUTATIONAL = "computational"  # {|H>, |V>}
    DIAGONAL = "diagonal"            # {|+>, |->}


class Outcome(str, Enum):
    H = "H"
    V = "V"
    PLUS = "Plus"
    MINUS = "Minus"

    @property
    def basis(self) -> MeasBasis:
        if self in (Outcome.H, Outcome.V):
            return MeasBasis.COMPUTATIONAL
        return MeasBasis.DIAGONAL

    @property
    def bit(self) -> int:
        """Eigenvector index within its basis (H/Plus -> 0, V/Minus -> 1)."""
        return 0 if self in (Outcome.H, Outcome.PLUS) else 1

    @classmethod
    def from_bit(cls, basis: MeasBasis, bit: int) -> "Outcome":
        if basis == MeasBasis.COMPUTATIONAL:
            return cls.H if bit == 0 else cls.V
        return cls.PLUS if bit == 0 else cls.MINUS
