#!/usr/bin/env python3
"""
Export an assembled obstacle problem for use outside the solver.

Writes the stiffness matrix in Matrix Market format, the load and obstacle vectors as
one value per line, the cover dump (patches and nodes) and, with --solve, the PDAS
solution u and multiplier lambda.

Example:
  python scripts/export_problem.py --level 4 --out exports/level4 --solve
"""

import argparse
import os
import sys

SOLVER_ROOT = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'solver')
sys.path.insert(0, SOLVER_ROOT)

from plate_obstacle.discretization import build_problem, dump_cover_csv  # noqa: E402
from plate_obstacle.exceptions import PlateObstacleError  # noqa: E402
from plate_obstacle.linalg import write_matrix_market, write_vector  # noqa: E402
from plate_obstacle.solvers import check_kkt, pdas_solve  # noqa: E402


class ProblemExporter:
    """Assemble one level and write its matrices and vectors to disk"""

    def __init__(self, level: int, kind: str, output_dir: str, pdas_c: float = None):
        """
        Args:
            level: refinement level (2^level x 2^level patches)
            kind: 'dome' or 'free'
            output_dir: directory for the exported files
            pdas_c: PDAS constant stored on the problem (settings default when None)
        """
        self.level = level
        self.kind = kind
        self.output_dir = output_dir
        self.pdas_c = pdas_c
        os.makedirs(output_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def export_problem(self, problem):
        write_matrix_market(problem.stiffness, self.path('stiffness.mtx'),
                            comment=f"level {self.level} {self.kind} biharmonic stiffness")
        write_vector(problem.load, self.path('load.txt'))
        write_vector(problem.obstacle, self.path('obstacle.txt'))
        dump_cover_csv(problem.cover, self.path('patches.csv'), self.path('nodes.csv'))

    def export_solution(self, problem):
        report = pdas_solve(problem)
        write_vector(report.u, self.path('u.txt'))
        write_vector(report.lam, self.path('lambda.txt'))
        kkt = check_kkt(report.u, report.lam, problem)
        return report, kkt

    def build(self, solve: bool = False):
        print("=" * 80)
        print("Obstacle Problem Export")
        print("=" * 80)

        print(f"\n1. Assembling level {self.level} ({self.kind})")
        problem = build_problem(self.level, self.kind, self.pdas_c)
        print(f"   {problem.size} dofs, {problem.stiffness.nnz} stored stiffness entries")

        print(f"\n2. Writing matrices and vectors to: {self.output_dir}")
        self.export_problem(problem)

        if solve:
            print("\n3. Solving with PDAS (direct reduced solves)")
            report, kkt = self.export_solution(problem)
            status = "converged" if report.converged else "did not converge"
            print(f"   PDAS {status} in {report.iterations} iterations, |A| = {len(report.active)}")
            print(f"   KKT check: {'passed' if kkt.passed else 'failed: ' + ', '.join(kkt.failures)}")

        print("\n" + "=" * 80)
        print("Export Complete!")
        print("=" * 80)
        for name in sorted(os.listdir(self.output_dir)):
            print(f"  - {self.path(name)}")


def main():
    """Main execution function"""
    parser = argparse.ArgumentParser(description='Export an assembled plate obstacle problem')
    parser.add_argument('--level', type=int, default=3, help='refinement level (default 3)')
    parser.add_argument('--problem', choices=['dome', 'free'], default='dome')
    parser.add_argument('--c', dest='pdas_c', type=float, default=None, help='PDAS constant c > 0')
    parser.add_argument('--out', default=None, help='output directory (default exports/level<L>)')
    parser.add_argument('--solve', action='store_true', help='also export the PDAS solution')
    args = parser.parse_args()

    output_dir = args.out or os.path.join('exports', f'level{args.level}')
    try:
        ProblemExporter(args.level, args.problem, output_dir, args.pdas_c).build(solve=args.solve)
    except PlateObstacleError as e:
        print(f"Error: {e}")
        return 1
    return 0


if __name__ == "__main__":
    exit(main())
