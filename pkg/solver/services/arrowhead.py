"""
Arrowhead decomposition of a tridiagonal system.

The unknowns are split into m contiguous blocks separated by single scalar
separators. Reordering block interiors first and separators last gives

    [ S    W_R ] [s]   [F_s]
    [ W_L  H   ] [h] = [F_h]

with S block diagonal. The separators solve the Schur complement system
(H - W_L S^-1 W_R) h = F_h - W_L S^-1 F_s, after which every block recovers
its interior independently: s^k = z^k - Zl^k h_{k-1} - Zr^k h_k.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from core.exceptions import InvalidParameterError, SingularSystemError, TooSmallSystemError

from .fast_poisson import thomas_solve

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PartitionMap:
    """Half-open block ranges and separator indices over 0..n-1."""

    size: int
    blocks: tuple
    separators: tuple

    @property
    def count(self):
        return len(self.blocks)

    def block_sizes(self):
        return [hi - lo for lo, hi in self.blocks]

    def permutation(self):
        """Block interiors in order, then separators."""
        order = [index for lo, hi in self.blocks for index in range(lo, hi)]
        return np.array(order + list(self.separators))


def balanced_sizes(total, parts):
    """Sizes differing by at most one, larger ones first."""
    quotient, remainder = divmod(total, parts)
    return [quotient + 1] * remainder + [quotient] * (parts - remainder)


def partition_map(size, count, block_sizes=None):
    if count < 1:
        raise InvalidParameterError(f"Block count must be positive, got {count}")
    if size < 3 * count - 1:
        raise TooSmallSystemError(
            f"A system of size {size} cannot be split into {count} blocks of at least 2"
        )
    if block_sizes is None:
        block_sizes = balanced_sizes(size - (count - 1), count)
    block_sizes = list(block_sizes)
    if len(block_sizes) != count or sum(block_sizes) + count - 1 != size:
        raise InvalidParameterError(
            f"Block sizes {block_sizes} do not tile a system of size {size} with {count - 1} separators"
        )
    if count > 1 and min(block_sizes) < 2:
        raise TooSmallSystemError(f"Block sizes {block_sizes} include a block smaller than 2")

    blocks, separators, lo = [], [], 0
    for k, width in enumerate(block_sizes):
        blocks.append((lo, lo + width))
        lo += width
        if k < count - 1:
            separators.append(lo)
            lo += 1
    return PartitionMap(size=size, blocks=tuple(blocks), separators=tuple(separators))


class ArrowheadSystem:
    """Reordered tridiagonal system; coefficient arrays may carry a trailing batch axis."""

    def __init__(self, system, partition):
        self.system = system
        self.partition = partition
        self.blocks = [system.rows(lo, hi) for lo, hi in partition.blocks]
        self.left_columns = None
        self.right_columns = None
        self.lu = None

    @property
    def count(self):
        return self.partition.count

    def block_solve(self, k, rhs):
        """z^k = (S^k)^-1 rhs for the interior of block k."""
        return thomas_solve(self.blocks[k].with_rhs(rhs))

    def precompute_schur(self):
        system, partition = self.system, self.partition
        self.left_columns, self.right_columns = [], []
        for k, (lo, hi) in enumerate(partition.blocks):
            block = self.blocks[k]
            unit = np.zeros((hi - lo,) + np.shape(system.diag)[1:])
            left = right = None
            if k > 0:
                first = unit.copy()
                first[0] = system.lower[lo]
                left = thomas_solve(block.with_rhs(first))
            if k < partition.count - 1:
                last = unit.copy()
                last[-1] = system.upper[hi - 1]
                right = thomas_solve(block.with_rhs(last))
            self.left_columns.append(left)
            self.right_columns.append(right)

        separators = partition.count - 1
        if separators == 0:
            self.schur = None
            self.lu = []
            return self

        batch = np.shape(system.diag)[1:]
        schur = np.zeros(batch + (separators, separators))
        for j, p in enumerate(partition.separators):
            a, b, c = system.lower[p], system.diag[p], system.upper[p]
            schur[..., j, j] = (
                b - a * self.right_columns[j][-1] - c * self.left_columns[j + 1][0]
            )
            if j > 0:
                schur[..., j, j - 1] = -a * self.left_columns[j][-1]
            if j < separators - 1:
                schur[..., j, j + 1] = -c * self.right_columns[j + 1][0]

        self.schur = schur
        flat = schur.reshape((-1, separators, separators))
        self.lu = []
        for matrix in flat:
            lu, pivots = scipy.linalg.lu_factor(matrix, check_finite=False)
            if np.any(np.diag(lu) == 0):
                raise SingularSystemError("Schur complement of the arrowhead system is singular")
            self.lu.append((lu, pivots))
        logger.debug("Factored %d Schur complements of size %d", len(self.lu), separators)
        return self

    def separator_rhs(self, j, f_separator, left_last, right_first):
        """g_j = F_h[j] - a z^j[last] - c z^{j+1}[first]."""
        p = self.partition.separators[j]
        return f_separator - self.system.lower[p] * left_last - self.system.upper[p] * right_first

    def solve_separators(self, g):
        """Separator values h from the Schur system; g has the separator index first."""
        if self.lu is None:
            raise InvalidParameterError("precompute_schur must run before solving")
        if not self.lu:
            return np.zeros((0,) + np.shape(g)[1:])
        g = np.asarray(g, dtype=float)
        columns = g.reshape(g.shape[0], -1)
        result = np.empty_like(columns)
        for item, factors in enumerate(self.lu):
            result[:, item] = scipy.linalg.lu_solve(factors, columns[:, item])
        return result.reshape(g.shape)

    def back_substitute(self, k, z, h_left, h_right):
        s = z.copy()
        if h_left is not None:
            s -= self.left_columns[k] * h_left
        if h_right is not None:
            s -= self.right_columns[k] * h_right
        return s

    def solve(self, f):
        partition = self.partition
        f = np.asarray(f, dtype=float)
        z = [self.block_solve(k, f[lo:hi]) for k, (lo, hi) in enumerate(partition.blocks)]
        if partition.count == 1:
            return z[0]

        g = np.stack(
            [
                self.separator_rhs(j, f[p], z[j][-1], z[j + 1][0])
                for j, p in enumerate(partition.separators)
            ]
        )
        h = self.solve_separators(g)

        u = np.empty_like(f)
        for k, (lo, hi) in enumerate(partition.blocks):
            h_left = h[k - 1] if k > 0 else None
            h_right = h[k] if k < partition.count - 1 else None
            u[lo:hi] = self.back_substitute(k, z[k], h_left, h_right)
        u[list(partition.separators)] = h
        return u

    def reordered_blocks(self):
        """Dense (S, W_R, W_L, H) of an unbatched system in permuted order."""
        dense = self.system.to_dense()
        order = self.partition.permutation()
        interior = sum(self.partition.block_sizes())
        permuted = dense[np.ix_(order, order)]
        return (
            permuted[:interior, :interior],
            permuted[:interior, interior:],
            permuted[interior:, :interior],
            permuted[interior:, interior:],
        )


def decompose(system, count, block_sizes=None):
    partition = partition_map(system.size, count, block_sizes)
    return partition, ArrowheadSystem(system, partition)


def precompute_schur(arrowhead):
    return arrowhead.precompute_schur()


def solve(arrowhead, f):
    if arrowhead.lu is None:
        arrowhead.precompute_schur()
    return arrowhead.solve(f)
