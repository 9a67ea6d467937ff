"""Seeded random streams: one per party and one per channel, all spawned from the session seed."""

from dataclasses import dataclass
from typing import Dict

import numpy as np

from ..models.channel import ChannelName

# Spawn order is part of the reproducibility contract; append, never reorder.
STREAM_ORDER = ("client", "server", *[name.value for name in ChannelName])


@dataclass
class SessionStreams:
    client: np.random.Generator
    server: np.random.Generator
    channels: Dict[ChannelName, np.random.Generator]


def session_streams(seed: int) -> SessionStreams:
    children = np.random.SeedSequence(seed).spawn(len(STREAM_ORDER))
    generators = {name: np.random.default_rng(child) for name, child in zip(STREAM_ORDER, children)}
    return SessionStreams(
        client=generators["client"],
        server=generators["server"],
        channels={name: generators[name.value] for name in ChannelName},
    )


def repetition_seed(base_seed: int, repetition: int) -> int:
    """Seed for repetition i is base_seed + i, wrapped into the unsigned 64-bit range."""
    return (base_seed + repetition) % (2 ** 64)
