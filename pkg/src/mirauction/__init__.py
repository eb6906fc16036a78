"""Maximal-in-range combinatorial auctions: allocation banks, exact welfare
optimization over them, VCG pricing, and brute-force verification tools."""
from .banks import (
    Allocation, BucketingBank, ChunkingBank, ExplicitBank, RChunkingBank,
    bucket_shattering_bank, chunking_bank, complete_bank, explicit_bank,
    make_bucket_shattering_params, p_bucketing_bank, r_chunking_bank,
)
from .errors import MalformedInput, MIRError, PreconditionFailed, ScaleRefused, SearchFailed
from .instances import Instance, gen_instance, load_instance
from .kernels import BACKEND
from .mechanisms import (
    MechanismOutcome, bucket_shattering_mechanism, chunking_mechanism, dp_optimize,
    efficient_bucket_shattering_mechanism, optimize_over_bank, run_mechanism, vcg_outcome,
)
from .partitions import Partition, PartitionList, find_r_itemizing, sample_partition
from .valuations import QueryLedger, check_class

__version__ = "0.1.0"

__all__ = [
    "Allocation", "BucketingBank", "ChunkingBank", "ExplicitBank", "RChunkingBank",
    "bucket_shattering_bank", "chunking_bank", "complete_bank", "explicit_bank",
    "make_bucket_shattering_params", "p_bucketing_bank", "r_chunking_bank",
    "MalformedInput", "MIRError", "PreconditionFailed", "ScaleRefused", "SearchFailed",
    "Instance", "gen_instance", "load_instance", "BACKEND", "MechanismOutcome",
    "bucket_shattering_mechanism", "chunking_mechanism", "dp_optimize",
    "efficient_bucket_shattering_mechanism", "optimize_over_bank", "run_mechanism", "vcg_outcome",
    "Partition", "PartitionList", "find_r_itemizing", "sample_partition", "QueryLedger", "check_class",
]
