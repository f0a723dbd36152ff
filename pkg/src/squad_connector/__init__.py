from squad_connector.tokenizer import tokenize
from squad_connector.squad import (
    DatasetStats,
    SquadFile,
    SquadFormatError,
    Triplet,
    dataset_stats,
    parse_squad,
    read_squad,
    write_squad,
)

__all__ = [
    "DatasetStats",
    "SquadFile",
    "SquadFormatError",
    "Triplet",
    "dataset_stats",
    "parse_squad",
    "read_squad",
    "tokenize",
    "write_squad",
]
