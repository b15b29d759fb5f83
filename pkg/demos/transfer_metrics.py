"""Transferability metrics from per-house scores.

A model is trained on one house and tested on that house (the "seen" test)
and on four houses it never saw. The G-loss of each unseen house tells how
much of the seen-house score was lost; the MGL averages those losses.

    python3 demos/transfer_metrics.py
"""

from __future__ import annotations

from nilmtransfer.transfer import SeenScore, build_report, format_percent, format_value

seen = SeenScore("F1", 0.88, house_id="house_a")
unseen = {"house_b": 0.71, "house_c": 0.64, "house_d": 0.90, "house_e": 0.52}

report = build_report(seen, unseen, algorithm_id="CO", appliance_id="fridge")

print(f"GR {report.gr}: trained and seen-tested on {seen.house_id}, {len(unseen)} unseen houses")
for u in report.unseen:
    print(f"  {u.house_id}: F1 {u.value:.2f}  G-loss {format_percent(u.g_loss)}")
print(f"{report.unseen_label} {format_value(report.auh_or_euh)}")
print(f"MGL {format_percent(report.mgl)}  (from rounded inputs: {format_percent(report.mgl_from_rounded)})")

# house_d scored above the seen house, so its G-loss is a gain (negative).
# A regression metric measures error instead, so the sign convention flips:
err = build_report(SeenScore("MAE", 21.5, "house_a"), {"house_b": 35.0, "house_c": 19.0})
print(f"\nMAE: EUH {format_value(err.auh_or_euh)} W, MGL {format_percent(err.mgl)}")
for note in err.notes:
    print(f"note: {note}")
