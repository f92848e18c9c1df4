"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import itertools

from pydantic import BaseModel, ConfigDict, model_validator

Offset = tuple[int, ...]


def canonical(offset: Offset) -> Offset:
    """
    Representative of the line spanned by an offset: the first nonzero
    component is made positive.
    """
    for c in offset:
        if c != 0:
            return offset if c > 0 else tuple(-x for x in offset)
    return offset


class FrameSet(BaseModel):
    """
    Orthogonal lattice frames used by the wide-stencil Pucci discretisation.

    Each frame is a tuple of N mutually orthogonal integer offsets. The
    discrete operator takes the maximum over frames of the sign-split sum of
    second differences along the frame's directions.

    The model is configured to forbid extra fields that are not defined in the model.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
    frames: tuple[tuple[Offset, ...], ...]

    @model_validator(mode="after")
    def check_frames(self):
        if not self.frames:
            raise ValueError("FrameSet needs at least one frame.")
        dimension = len(self.frames[0][0])
        for k, frame in enumerate(self.frames):
            if len(frame) != dimension:
                raise ValueError(
                    f"Frame {k} has {len(frame)} directions, expected {dimension}."
                )
            for d in frame:
                if len(d) != dimension:
                    raise ValueError(
                        f"Direction {d} in frame {k} is not {dimension}-dimensional."
                    )
                if all(c == 0 for c in d):
                    raise ValueError(f"Frame {k} contains the zero offset.")
                if max(abs(c) for c in d) > 2:
                    raise ValueError(
                        f"Direction {d} in frame {k} exceeds stencil width 2."
                    )
            for d1, d2 in itertools.combinations(frame, 2):
                if sum(a * b for a, b in zip(d1, d2)) != 0:
                    raise ValueError(
                        f"Directions {d1} and {d2} in frame {k} are not orthogonal."
                    )
        return self

    @property
    def dimension(self) -> int:
        return len(self.frames[0][0])

    @classmethod
    def axis(cls, dimension: int) -> "FrameSet":
        """
        The single axis frame; the discrete operator then only resolves
        Hessians that are diagonal in the coordinate axes.
        """
        eye = tuple(
            tuple(int(i == j) for j in range(dimension)) for i in range(dimension)
        )
        return cls(frames=(eye,))

    @classmethod
    def default(cls, dimension: int) -> "FrameSet":
        """
        Axis frame plus the in-plane diagonal frames.

        Parameters
        ----------
        dimension : int
            2 or 3.

        Returns
        -------
        FrameSet
            {(1,0),(0,1)} and {(1,1),(1,-1)} in 2D; the axis frame and the
            three frames {e_i + e_j, e_i - e_j, e_k} in 3D.
        """
        axis = cls.axis(dimension).frames[0]
        if dimension == 2:
            return cls(frames=(axis, ((1, 1), (1, -1))))
        if dimension == 3:
            diagonal = []
            for i, j, k in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
                plus = [0, 0, 0]
                minus = [0, 0, 0]
                plus[i], plus[j] = 1, 1
                minus[i], minus[j] = 1, -1
                diagonal.append((tuple(plus), tuple(minus), axis[k]))
            return cls(frames=(axis, *diagonal))
        raise ValueError(f"Unsupported dimension {dimension}, expected 2 or 3.")

    def lines(self) -> list[Offset]:
        """
        Canonical directions used by any frame, axis directions first.
        """
        out: list[Offset] = list(self.axis(self.dimension).frames[0])
        for frame in self.frames:
            for d in frame:
                c = canonical(d)
                if c not in out:
                    out.append(c)
        return out
