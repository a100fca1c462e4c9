"""Rendering of concept parts, concept patches and 3x3 concept grids
into image tensors, plus the stochastic 2x upscaling.

Geometry: an 18x18x3 base image is a 3x3 grid of 6x6 concept patches;
each patch splits into four 3x3 quadrants (row-major positions 0..3)
holding concept-part patterns in a single channel.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from xaibench import formulas
from xaibench.formulas import ConceptPartAtom, Formula
from xaibench.patterns import ConceptPartSpec

BASE_SIZE = 18
FULL_SIZE = 36
GRID = 3  # concepts per image side
PATCH = 6  # pixels per concept patch side
QUAD = 3  # pixels per quadrant side


@dataclass(frozen=True)
class Placement:
    """One concept instance: which concept, which grid cell, which atoms
    of its definition are rendered (a satisfying assignment)."""

    concept_id: int
    pos: int  # 0..8, row-major grid position
    true_atoms: tuple[ConceptPartAtom, ...]


def satisfying_assignments(formula: Formula) -> list[tuple[ConceptPartAtom, ...]]:
    """All subsets of the formula's atoms that satisfy it, in order of
    (popcount, lexicographic enumeration)."""
    atoms = formula.atoms()
    out = []
    for bits in itertools.product((0, 1), repeat=len(atoms)):
        assignment = dict(zip(atoms, bits))
        if formulas.evaluate(formula, assignment):
            out.append(tuple(a for a, b in zip(atoms, bits) if b))
    out.sort(key=lambda subset: (len(subset), [str(a) for a in subset]))
    return out


def canonical_atoms(formula: Formula) -> tuple[ConceptPartAtom, ...]:
    """The minimal satisfying assignment; for pure conjunctions this is
    every atom. Used as the part layout of absent (negated) concepts."""
    sats = satisfying_assignments(formula)
    if not sats:
        raise ValueError("formula is unsatisfiable")
    return sats[0]


def render_concept_patch(parts: list[ConceptPartSpec],
                         true_atoms) -> np.ndarray:
    """6x6x3 patch holding the given concept-part atoms."""
    patch = np.zeros((PATCH, PATCH, 3), dtype=np.float64)
    for atom in true_atoms:
        qy, qx = divmod(atom.pos, 2)
        patch[qy * QUAD:(qy + 1) * QUAD, qx * QUAD:(qx + 1) * QUAD, atom.ch] = \
            parts[atom.part_id].pattern
    return patch


def render_base_image(placements, parts: list[ConceptPartSpec]) -> np.ndarray:
    """18x18x3 image from a list of Placements (at most one per cell)."""
    img = np.zeros((BASE_SIZE, BASE_SIZE, 3), dtype=np.float64)
    seen = set()
    for pl in placements:
        if pl.pos in seen:
            raise ValueError(f"two concepts at grid position {pl.pos}")
        seen.add(pl.pos)
        gy, gx = divmod(pl.pos, GRID)
        img[gy * PATCH:(gy + 1) * PATCH, gx * PATCH:(gx + 1) * PATCH, :] = \
            render_concept_patch(parts, pl.true_atoms)
    return img


def upscale(img18: np.ndarray, r0: int, r1: int) -> np.ndarray:
    """2x scatter upscaling: out[2y+r0, 2x+r1, :] = img[y, x, :]."""
    if r0 not in (0, 1) or r1 not in (0, 1):
        raise ValueError(f"offsets must be 0 or 1, got ({r0}, {r1})")
    h, w, c = img18.shape
    out = np.zeros((2 * h, 2 * w, c), dtype=np.float64)
    out[r0::2, r1::2, :] = img18
    return out


def downscale(img36: np.ndarray, r0: int, r1: int) -> np.ndarray:
    """Inverse of :func:`upscale` at known offsets."""
    return np.ascontiguousarray(img36[r0::2, r1::2, :])
