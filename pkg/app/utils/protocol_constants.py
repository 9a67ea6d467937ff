"""
Common constants used across the protocol services.
This module centralizes the wiring of sources, labels and channels.
"""

from ..models.channel import ChannelName
from ..models.protocol import Source

# Spatial modes: Alice holds a_k, Bob holds b_k of source S_k.
ALICE_LABEL = {
    Source.S1: "a1",
    Source.S2: "a2",
    Source.S3: "a3",
}
BOB_LABEL = {
    Source.S1: "b1",
    Source.S2: "b2",
    Source.S3: "b3",
}

# Channel carrying the Alice-bound half of each source
SOURCE_CHANNEL = {
    Source.S1: ChannelName.C_A1B1,
    Source.S2: ChannelName.C_A2B2,
    Source.S3: ChannelName.C_A3B3,
}

# Control qubits and returned targets travel back on this channel
RETURN_CHANNEL = ChannelName.C_A4B4

CONTROL_LABEL = BOB_LABEL[Source.S1]
TARGET_U_LABEL = BOB_LABEL[Source.S2]
TARGET_V_LABEL = BOB_LABEL[Source.S3]

# Report layout
TRIALS_CSV_HEADER = [
    "repetition",
    "pair_index",
    "reference",
    "control_basis",
    "outcome_kind",
    "discarded_loss",
]
SUMMARY_FILE = "summary.json"
TRIALS_FILE = "trials.csv"
TRANSCRIPT_FILE = "transcript.jsonl"

# CLI exit codes
EXIT_COMPLETED = 0
EXIT_ALL_ABORTED = 2  # any abort reason, not only a suspected eavesdropper
EXIT_CONFIG_ERROR = 3
EXIT_IO_ERROR = 4
