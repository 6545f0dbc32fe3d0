"""Expand a few determinants and run the Sklyanin determinant checks.

Run from the repository root:

    python3 demos/sdet_identities.py
"""

from rttlab import cli, verify


def main():
    for what, algebra, n in [("qdet", "gl", 2), ("sdet", "o", 2), ("sdet", "sp", 2)]:
        poly = cli.expand_poly(what, algebra, n, 1)
        print(f"{what} {algebra}_{n}:")
        for line in cli.poly_text(poly).splitlines():
            print("   ", line)

    plan = [entry for entry in verify.default_plan() if entry[0].startswith("sdet")]
    for ident, params in plan:
        report = verify.run_identity(ident, params)
        print(f"{ident:20s} {params} {report.verdict}")


if __name__ == "__main__":
    main()
