"""Synthetic feature-map datasets with planted contact rules.

Each contact state is tied to a marker pattern written into a fixed channel
block at a random location, over Gaussian background noise:

  no_contact      -> marker in the hand map (block 4)
  self_contact    -> marker in the hand map (block 2)
  other_person    -> marker in one union map (block 3)
  object_contact  -> payload marker in one union map (block 1) plus a pairing
                     code in block 0 of both that union map and the hand map
                     at the same location, so affinity pooling can key on it

Labels are drawn per state, then independently masked to "unsure" at a fixed
rate to exercise loss masking. Generation is fully determined by the spec.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigurationError
from .head import CONTACT_STATES, NO, UNSURE, YES

MARKER_AMPLITUDE = 3.0
BLOCK_WIDTH = 4
N_BLOCKS = 5  # pairing code, object payload, self, other-person, no-contact
YES_RATE = 0.5
UNSURE_RATE = 0.1

_PAIR_CODE, _OBJECT_PAYLOAD, _SELF, _OTHER_PERSON, _NO_CONTACT = range(N_BLOCKS)


def _block(i):
    return slice(i * BLOCK_WIDTH, (i + 1) * BLOCK_WIDTH)


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 16
    d: int = 32
    k_min: int = 1
    k_max: int = 3
    rule: str = "markers"
    noise_std: float = 0.25
    seed: int = 0
    count: int = 2000

    def __post_init__(self):
        if self.rule != "markers":
            raise ConfigurationError(f"unknown planted rule {self.rule!r}")
        if self.d < N_BLOCKS * BLOCK_WIDTH:
            raise ConfigurationError(
                f"rule 'markers' needs at least {N_BLOCKS * BLOCK_WIDTH} channels, got {self.d}"
            )
        if not 1 <= self.k_min <= self.k_max:
            raise ConfigurationError(f"bad union-count range [{self.k_min}, {self.k_max}]")


@dataclass
class Sample:
    hand: np.ndarray
    unions: list
    label: tuple


def expected_label_rates():
    """Marginal label rates the generator targets per state."""
    return {
        YES: YES_RATE * (1.0 - UNSURE_RATE),
        NO: (1.0 - YES_RATE) * (1.0 - UNSURE_RATE),
        UNSURE: UNSURE_RATE,
    }


def generate(spec):
    """Deterministic dataset of (hand map, union maps, label) samples."""
    rng = np.random.default_rng(spec.seed)
    samples = []
    for _ in range(spec.count):
        k = int(rng.integers(spec.k_min, spec.k_max + 1))
        hand = rng.normal(0.0, spec.noise_std, (spec.n, spec.d))
        unions = [rng.normal(0.0, spec.noise_std, (spec.n, spec.d)) for _ in range(k)]
        truth = rng.random(len(CONTACT_STATES)) < YES_RATE
        unsure = rng.random(len(CONTACT_STATES)) < UNSURE_RATE

        if truth[0]:
            hand[rng.integers(spec.n), _block(_NO_CONTACT)] += MARKER_AMPLITUDE
        if truth[1]:
            hand[rng.integers(spec.n), _block(_SELF)] += MARKER_AMPLITUDE
        if truth[2]:
            unions[rng.integers(k)][rng.integers(spec.n), _block(_OTHER_PERSON)] += MARKER_AMPLITUDE
        if truth[3]:
            loc = int(rng.integers(spec.n))
            target = unions[int(rng.integers(k))]
            target[loc, _block(_OBJECT_PAYLOAD)] += MARKER_AMPLITUDE
            target[loc, _block(_PAIR_CODE)] += MARKER_AMPLITUDE
            hand[loc, _block(_PAIR_CODE)] += MARKER_AMPLITUDE

        label = tuple(
            UNSURE if unsure[s] else (YES if truth[s] else NO)
            for s in range(len(CONTACT_STATES))
        )
        samples.append(Sample(hand=hand, unions=unions, label=label))
    return samples


def rule_detector(sample):
    """Hand-written marker detector; recovers the planted truth exactly when
    noise_std is 0 (used as the generator's oracle)."""
    half = MARKER_AMPLITUDE / 2.0
    hand = sample.hand
    found_no = bool((hand[:, _block(_NO_CONTACT)] > half).all(axis=1).any())
    found_self = bool((hand[:, _block(_SELF)] > half).all(axis=1).any())
    found_person = any(
        (u[:, _block(_OTHER_PERSON)] > half).all(axis=1).any() for u in sample.unions
    )
    found_object = False
    for u in sample.unions:
        payload = (u[:, _block(_OBJECT_PAYLOAD)] > half).all(axis=1)
        paired = (u[:, _block(_PAIR_CODE)] > half).all(axis=1) & (
            hand[:, _block(_PAIR_CODE)] > half
        ).all(axis=1)
        if bool((payload & paired).any()):
            found_object = True
            break
    return (found_no, found_self, found_person, found_object)


def spec_to_dict(spec):
    return asdict(spec)
