from ._dkm import DynamicKMeans, UsageError, cost, dist2, gen_workload, run_stream, verify

__all__ = ["DynamicKMeans", "UsageError", "cost", "dist2", "gen_workload", "run_stream", "verify"]
