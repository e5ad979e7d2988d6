"""Day-by-day recomputation of a scripted 30-day Buy-Sell-Hold scenario.

Writes the scenario inputs and the expected per-day and summary values used by
the acceptance suite. Plain-float arithmetic, one row at a time.
"""
import csv
import math
import random
import statistics
from datetime import date, timedelta

rng = random.Random(20240607)
days = 30
threshold = 0.03
start = date(2022, 3, 1)

prev = 250.0
rows = []
for i in range(days):
    actual = prev * math.exp(rng.gauss(0.0, 0.03))
    predicted = prev * (1.0 + rng.uniform(-0.07, 0.07))
    rows.append((start + timedelta(days=i), prev, actual, predicted))
    prev = actual

per_day = []
for d, prev, actual, predicted in rows:
    v = predicted / prev - 1.0
    pos = 1 if v > threshold else (-1 if v < -threshold else 0)
    r = math.log(actual / prev)
    g = math.exp(pos * r)
    per_day.append((d, v, pos, r, g))

g = [p[4] for p in per_day]
signed = [p[2] * p[3] for p in per_day]
spy = [p[3] for p in per_day]
literal = 0.0
for x in g:
    literal += x
compounded = 1.0
for x in g:
    compounded *= x
base_literal = 0.0
for r in spy:
    base_literal += math.exp(r)
base_compounded = 1.0
for r in spy:
    base_compounded *= math.exp(r)
summary = {
    "literal": literal,
    "compounded": compounded,
    "baseline_literal": base_literal,
    "baseline_compounded": base_compounded,
    "sharpe": statistics.mean(signed) / statistics.stdev(signed),
    "baseline_sharpe": statistics.mean(spy) / statistics.stdev(spy),
}

with open("../fixtures/backtest_scenario.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["date", "previous_close", "actual", "predicted", "v_d", "position", "g_n"])
    for (d, prev, actual, predicted), (_, v, pos, _, gn) in zip(rows, per_day):
        w.writerow([d.isoformat(), repr(prev), repr(actual), repr(predicted), repr(v), pos, repr(gn)])

with open("../fixtures/backtest_expected.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["quantity", "value"])
    for k, v in summary.items():
        w.writerow([k, repr(v)])

print(summary, sum(1 for p in per_day if p[2] != 0), "trading days")
