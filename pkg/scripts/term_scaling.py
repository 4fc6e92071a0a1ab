"""Pauli-string counts of H, H^2 and H^3 for Hamiltonian files.

    python scripts/term_scaling.py fixtures/*.json fixtures/*.txt
"""

import argparse

from lanczos_mitigation.models import load_pauli_file
from lanczos_mitigation.pauli import count_terms_report


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("files", nargs="+")
    args = p.parse_args()
    print(f"{'file':40s} {'n':>3s} {'|H|':>6s} {'|H^2|':>6s} {'|H^3|':>6s}")
    for f in args.files:
        h = load_pauli_file(f)
        r = count_terms_report(h)
        print(f"{f:40s} {h.n_qubits:3d} " + " ".join(f"{c:6d}" for c in r.counts))


if __name__ == "__main__":
    main()
