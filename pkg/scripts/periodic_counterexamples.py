"""Period gaps of the rational-length counterexamples, with and without persistent damping."""

import argparse
import math

from petransport.scenarios import check_scenario, two_circle_pe_periodic, two_circle_rational_periodic


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ell", type=float, default=1.0)
    args = ap.parse_args()

    print("scenario,p,q,max_gap,ok")
    for p, q in [(1, 1), (1, 2), (2, 3), (3, 5), (5, 8)]:
        for build in (two_circle_rational_periodic, two_circle_pe_periodic):
            if math.gcd(p, q) != 1:
                continue
            res = check_scenario(build(p=p, q=q, ell=args.ell))
            print(f"{build.__name__},{p},{q},{max(res.measured['gaps']):.3e},{res.ok}")


if __name__ == "__main__":
    main()
