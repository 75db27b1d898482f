"""Inference throughput of the bit-packed linear scan.

Ranks 2,000 query codes against an 18,015-code database at 128 bits,
single-threaded, and reports the raw popcount comparison rate.
"""

from threadpoolctl import threadpool_limits

from crosshash.cli import benchmark_inference

with threadpool_limits(limits=1):
    report = benchmark_inference(db_size=18015, query_count=2000, bits=128, seed=0)

print(f"database codes:   {report['db_size']:,}")
print(f"queries:          {report['query_count']:,}")
print(f"code length:      {report['bits']} bits")
print(f"full ranking:     {report['rank_wall_seconds']:.3f} s")
print(f"distance pass:    {report['distance_wall_seconds']:.3f} s")
print(f"comparison rate:  {report['comparisons_per_second'] / 1e6:.0f}M codes/s")
