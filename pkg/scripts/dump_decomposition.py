#!/usr/bin/env python3
"""
Dump the overlapping subdomain decomposition of one level.

Writes subdomains.csv (patch ranges, geometric rectangle, node count, Nc, delta, H) and
membership.csv (one row per node with the number of subdomains containing it and the
subdomain ids), plot-ready for checking overlap widths.

Example:
  python scripts/dump_decomposition.py --level 5 --J 16 --overlap generous
"""

import argparse
import os
import sys

SOLVER_ROOT = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'solver')
sys.path.insert(0, SOLVER_ROOT)

import pandas as pd  # noqa: E402

from plate_obstacle.discretization import build_cover_2d  # noqa: E402
from plate_obstacle.exceptions import PlateObstacleError  # noqa: E402
from plate_obstacle.solvers import build_decomposition  # noqa: E402


class DecompositionDumper:
    """Build a decomposition and write its geometry and node membership"""

    def __init__(self, level: int, J: int, overlap: str, output_dir: str):
        self.level = level
        self.J = J
        self.overlap = overlap
        self.output_dir = output_dir
        os.makedirs(output_dir, exist_ok=True)

    def membership_frame(self, cover, decomposition) -> pd.DataFrame:
        masks = [decomposition.node_mask(cover, j) for j in range(decomposition.J)]
        rows = []
        for g in range(cover.dof_count):
            owners = [j for j, mask in enumerate(masks) if mask[g]]
            rows.append({
                'node': g,
                'x': cover.coords[g, 0],
                'y': cover.coords[g, 1],
                'count': len(owners),
                'subdomains': ' '.join(str(j) for j in owners),
            })
        return pd.DataFrame(rows)

    def build(self):
        print("=" * 80)
        print("Subdomain Decomposition Dump")
        print("=" * 80)

        print(f"\n1. Building level {self.level} cover")
        cover = build_cover_2d(self.level)
        print(f"   {cover.patch_grid[0]}x{cover.patch_grid[1]} patches, {cover.dof_count} nodes")

        print(f"\n2. Decomposing into J={self.J} subdomains ({self.overlap} overlap)")
        decomposition = build_decomposition(cover, self.J, self.overlap)
        print(f"   {decomposition.overlap_patches} overlap layers, Nc={decomposition.Nc}, "
              f"delta={decomposition.delta:.4g}, H={decomposition.H:.4g}")

        print(f"\n3. Writing CSV files to: {self.output_dir}")
        subdomains_path = os.path.join(self.output_dir, 'subdomains.csv')
        membership_path = os.path.join(self.output_dir, 'membership.csv')
        decomposition.to_frame(cover).to_csv(subdomains_path, index=False)
        membership = self.membership_frame(cover, decomposition)
        membership.to_csv(membership_path, index=False)
        print(f"✓ Saved {subdomains_path}")
        print(f"✓ Saved {membership_path}")

        uncovered = int((membership['count'] == 0).sum())
        if uncovered:
            print(f"\nWarning: {uncovered} nodes lie in no subdomain")
        print("\n" + "=" * 80)
        print("Dump Complete!")
        print("=" * 80)


def main():
    """Main execution function"""
    parser = argparse.ArgumentParser(description='Dump an overlapping subdomain decomposition')
    parser.add_argument('--level', type=int, default=4)
    parser.add_argument('--J', type=int, default=16, help='subdomain count, a power of 4')
    parser.add_argument('--overlap', choices=['small', 'generous'], default='small')
    parser.add_argument('--out', default=None, help='output directory')
    args = parser.parse_args()

    output_dir = args.out or os.path.join('exports', f'decomposition_l{args.level}_J{args.J}_{args.overlap}')
    try:
        DecompositionDumper(args.level, args.J, args.overlap, output_dir).build()
    except PlateObstacleError as e:
        print(f"Error: {e}")
        return 1
    return 0


if __name__ == "__main__":
    exit(main())
