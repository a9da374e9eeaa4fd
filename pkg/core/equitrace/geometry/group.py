"""Acting groups: trivial, free abelian Z^k, finite (table) and the translation line R.

Elements are `GroupElt` values wrapping a tuple payload, so ordering of elements is the
lexicographic ordering of payloads and every enumeration below is deterministic.
"""

import itertools
import logging
from abc import ABCMeta, abstractmethod
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from equitrace.exceptions import UnsupportedGroupOperation, ValidationError
from equitrace.geometry.maps import AffineMap, ChartMap, ComposedMap

log = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class GroupElt:
    payload: Tuple

    def __str__(self):
        return ",".join(str(v) for v in self.payload) if self.payload else "e"


class GroupModel(metaclass=ABCMeta):
    kind: str
    haar: str = "counting"
    dim: int

    @abstractmethod
    def identity(self) -> GroupElt:
        pass

    @abstractmethod
    def compose(self, a: GroupElt, b: GroupElt) -> GroupElt:
        pass

    @abstractmethod
    def inverse(self, a: GroupElt) -> GroupElt:
        pass

    @abstractmethod
    def action_map(self, g: GroupElt) -> ChartMap:
        pass

    @abstractmethod
    def parse(self, text: str) -> GroupElt:
        pass

    def act(self, g: GroupElt, m: np.ndarray) -> np.ndarray:
        return self.action_map(g)(m)

    def act_jacobian(self, g: GroupElt, m: np.ndarray) -> np.ndarray:
        return self.action_map(g).jacobian(m)

    def conjugate(self, h: GroupElt, g: GroupElt) -> GroupElt:
        return self.compose(self.compose(h, g), self.inverse(h))

    @property
    def is_discrete(self) -> bool:
        return self.haar == "counting"

    @property
    def is_abelian(self) -> bool:
        return True

    def order(self, g: GroupElt) -> Optional[int]:
        """Order of g, None when infinite."""
        return 1 if g == self.identity() else None

    def word_length(self, g: GroupElt) -> int:
        return 0

    def ball(self, radius: int) -> List[GroupElt]:
        raise UnsupportedGroupOperation(
            f"Cannot enumerate elements of a {self.kind} group"
        )

    def centralizer(self, g: GroupElt, radius: int = 0) -> List[GroupElt]:
        if self.is_abelian:
            raise UnsupportedGroupOperation(
                f"Centralizer of a {self.kind} group is the whole group"
            )
        return [z for z in self.ball(radius) if self.compose(z, g) == self.compose(g, z)]

    def coset_representatives(self, g: GroupElt, radius: int = 0) -> List[GroupElt]:
        """One representative h per coset hZ of the centralizer Z of g."""
        if self.is_abelian:
            return [self.identity()]
        centralizer = self.centralizer(g, radius)
        covered = set()
        reps = []
        for h in sorted(self.ball(radius)):
            if h in covered:
                continue
            reps.append(h)
            covered.update(self.compose(h, z) for z in centralizer)
        log.debug(f"Coset representatives for g={g}: {[str(h) for h in reps]}")
        return reps

    def locate(
        self, p: np.ndarray, q: np.ndarray, candidates: Sequence[GroupElt]
    ) -> Tuple[GroupElt, float]:
        """Element z of `candidates` minimising |p - z q|, with that distance."""
        best, best_dist = None, np.inf
        for z in sorted(candidates):
            dist = float(np.linalg.norm(p - self.act(z, q)))
            if dist < best_dist:
                best, best_dist = z, dist
        return best, best_dist


class TrivialGroup(GroupModel):
    kind = "trivial"

    def __init__(self, dim: int):
        self.dim = dim
        self._map = AffineMap.identity(dim)

    def identity(self):
        return GroupElt(())

    def compose(self, a, b):
        return self.identity()

    def inverse(self, a):
        return self.identity()

    def action_map(self, g):
        return self._map

    def ball(self, radius):
        return [self.identity()]

    def parse(self, text):
        if text.strip() not in ("", "e"):
            raise ValidationError("g", f"the trivial group has only 'e', got {text!r}")
        return self.identity()


class FreeAbelianGroup(GroupModel):
    """Z^k acting through k commuting generator maps; payload is the exponent vector."""

    kind = "free-abelian"

    def __init__(self, generators: Sequence[ChartMap]):
        if len(generators) == 0:
            raise ValidationError(
                "group.generators", "free-abelian group needs generators"
            )
        self.generators = list(generators)
        self.rank = len(self.generators)
        self.dim = self.generators[0].dim

    def identity(self):
        return GroupElt((0,) * self.rank)

    def compose(self, a, b):
        return GroupElt(tuple(x + y for x, y in zip(a.payload, b.payload)))

    def inverse(self, a):
        return GroupElt(tuple(-x for x in a.payload))

    def action_map(self, g):
        maps = [gen.power(k) for gen, k in zip(self.generators, g.payload) if k != 0]
        if not maps:
            return AffineMap.identity(self.dim)
        if all(isinstance(f, AffineMap) for f in maps):
            out = maps[0]
            for f in maps[1:]:
                out = out.after(f)
            return out
        return maps[0] if len(maps) == 1 else ComposedMap(maps)

    def order(self, g):
        return 1 if g == self.identity() else None

    def word_length(self, g):
        return int(sum(abs(k) for k in g.payload))

    def ball(self, radius):
        rng = range(-radius, radius + 1)
        return sorted(
            GroupElt(tuple(v))
            for v in itertools.product(rng, repeat=self.rank)
            if sum(abs(k) for k in v) <= radius
        )

    def locate(self, p, q, candidates):
        if all(isinstance(f, AffineMap) and f.is_translation for f in self.generators):
            basis = np.array([f.shift for f in self.generators]).T
            k, *_ = np.linalg.lstsq(basis, np.asarray(p) - np.asarray(q), rcond=None)
            z = GroupElt(tuple(int(v) for v in np.round(k)))
            return z, float(np.linalg.norm(p - self.act(z, q)))
        return super().locate(p, q, candidates)

    def parse(self, text):
        try:
            values = tuple(int(v) for v in text.replace(" ", "").split(","))
        except ValueError:
            raise ValidationError("g", f"expected {self.rank} comma separated integers")
        if len(values) != self.rank:
            raise ValidationError(
                "g", f"expected {self.rank} integers, got {len(values)}"
            )
        return GroupElt(values)


class FiniteGroup(GroupModel):
    """Finite group generated by affine maps, its multiplication table built by closure.

    Element i is payload (i,), with 0 the identity and the rest in breadth-first order
    of shortest generator words.
    """

    kind = "finite"

    def __init__(self, generators: Sequence[AffineMap], max_order: int = 1024):
        if len(generators) == 0:
            raise ValidationError("group.generators", "finite group needs generators")
        self.dim = generators[0].dim
        self.generators = list(generators)
        elements = [AffineMap.identity(self.dim)]
        words: List[Tuple[int, ...]] = [()]
        index: Dict[Tuple, int] = {self._key(elements[0]): 0}
        queue = deque([0])
        while queue:
            i = queue.popleft()
            for gi, gen in enumerate(self.generators):
                prod = gen.after(elements[i])
                key = self._key(prod)
                if key not in index:
                    index[key] = len(elements)
                    elements.append(prod)
                    words.append((gi,) + words[i])
                    queue.append(index[key])
                    if len(elements) > max_order:
                        raise ValidationError(
                            "group.generators",
                            "generators do not close into a group of order"
                            f" <= {max_order}",
                        )
        self.elements = elements
        self.words = words
        self.index = index
        n = len(elements)
        self.table = np.zeros((n, n), dtype=int)
        for i, j in itertools.product(range(n), repeat=2):
            self.table[i, j] = index[self._key(elements[i].after(elements[j]))]
        self._inverse = [int(np.where(self.table[i] == 0)[0][0]) for i in range(n)]
        log.debug(f"Finite group of order {n} generated by {len(generators)} maps")

    @staticmethod
    def _key(f: AffineMap) -> Tuple:
        return tuple(np.round(np.concatenate([f.matrix.ravel(), f.shift]), 9).tolist())

    @property
    def size(self) -> int:
        return len(self.elements)

    @property
    def is_abelian(self):
        return bool(np.array_equal(self.table, self.table.T))

    def identity(self):
        return GroupElt((0,))

    def compose(self, a, b):
        return GroupElt((int(self.table[a.payload[0], b.payload[0]]),))

    def inverse(self, a):
        return GroupElt((self._inverse[a.payload[0]],))

    def action_map(self, g):
        return self.elements[g.payload[0]]

    def order(self, g):
        cur, k = g, 1
        while cur != self.identity():
            cur = self.compose(cur, g)
            k += 1
        return k

    def word_length(self, g):
        return len(self.words[g.payload[0]])

    def ball(self, radius=0):
        return [GroupElt((i,)) for i in range(self.size)]

    def centralizer(self, g, radius=0):
        return [z for z in self.ball() if self.compose(z, g) == self.compose(g, z)]

    def coset_representatives(self, g, radius=0):
        if self.is_abelian:
            return [self.identity()]
        return super().coset_representatives(g, radius)

    def parse(self, text):
        try:
            i = int(text.strip())
        except ValueError:
            raise ValidationError("g", f"expected an element index, got {text!r}")
        if not 0 <= i < self.size:
            raise ValidationError("g", f"element index must lie in [0, {self.size})")
        return GroupElt((i,))


class TranslationLine(GroupModel):
    """G = R acting by m -> m + a * direction, with Lebesgue Haar measure."""

    kind = "translation-line"
    haar = "lebesgue"

    def __init__(self, direction: Sequence[float]):
        self.direction = np.asarray(direction, dtype=float)
        if np.linalg.norm(self.direction) == 0:
            raise ValidationError("group.direction", "direction must be nonzero")
        self.dim = self.direction.size

    def identity(self):
        return GroupElt((0.0,))

    def compose(self, a, b):
        return GroupElt((a.payload[0] + b.payload[0],))

    def inverse(self, a):
        return GroupElt((-a.payload[0],))

    def action_map(self, g):
        return AffineMap.translation(g.payload[0] * self.direction)

    def order(self, g):
        return 1 if g.payload[0] == 0 else None

    def locate(self, p, q, candidates=()):
        a = float(np.dot(p - q, self.direction) / np.dot(self.direction, self.direction))
        z = GroupElt((a,))
        return z, float(np.linalg.norm(p - self.act(z, q)))

    def parse(self, text):
        try:
            return GroupElt((float(text),))
        except ValueError:
            raise ValidationError(
                "g", f"expected a real translation parameter, got {text!r}"
            )


def act(model: GroupModel, g: GroupElt, m: np.ndarray) -> np.ndarray:
    return model.act(g, m)


def act_jacobian(model: GroupModel, g: GroupElt, m: np.ndarray) -> np.ndarray:
    return model.act_jacobian(g, m)


def coset_representatives(model: GroupModel, g: GroupElt, radius: int) -> List[GroupElt]:
    return model.coset_representatives(g, radius)
