"""Turn a grid of channel pairs into a fully connected multi-user network.

Each pair of users needs its own channel pair, so n pairs support the largest
k with k(k-1)/2 <= n. The best channels go to the first links.
Run with ``python3 demos/network_plan.py``.
"""
import sys

from wdmqkd.network import assign_channels, max_fully_connected_users, point_to_point_users, write_plan_csv
from wdmqkd.optimizer import standard_scenario, total_key_rate


def main():
    for ghz in (100, 50, 25, 12.5):
        scenario = standard_scenario(ghz)
        n = scenario.grid.num_pairs
        lo, hi = point_to_point_users(n)
        k = max_fully_connected_users(n)
        print(f"{ghz:>5} GHz: {n:3d} pairs -> {k} users fully connected, point-to-point {lo} to {hi}")

    scenario = standard_scenario(100)
    pairs = scenario.grid.pairs()
    rates = [ch.secure_rate for ch in total_key_rate(scenario, 400.0).channels]
    plan = assign_channels(max_fully_connected_users(len(pairs)), pairs, rates)
    # the outermost long-wavelength channels fall off the profile, hence a zero weakest link
    print(f"\n100 GHz at 400 mW: {plan.users} users, total {plan.total_rate / 1e9:.3f} Gbit/s, "
          f"weakest link {plan.min_link_rate / 1e6:.2f} Mbit/s, {plan.leftover_pairs} pairs unused")
    print("first links of the plan:")
    short = type(plan)(plan.users, plan.links[:6], plan.leftover_pairs)
    write_plan_csv(short, sys.stdout)


if __name__ == "__main__":
    main()
