#!/usr/bin/env python3
"""
Backend test runner for the multiplier engine
"""
import os
import sys
import subprocess
import argparse
from pathlib import Path


def setup_test_environment():
    """Clear KOHN_* overrides so seeds and caps come from the tests"""
    for name in [n for n in os.environ if n.startswith("KOHN_")]:
        del os.environ[name]


def run_pytest_tests(verbose=False, coverage=False, markers=None, slow=False):
    """Run pytest tests with specified options"""
    cmd = [sys.executable, "-m", "pytest", "tests/"]

    if verbose:
        cmd.append("-v")

    if coverage:
        cmd.extend(["--cov=.", "--cov-report=html", "--cov-report=term-missing"])
    else:
        cmd.append("--no-cov")

    if markers:
        cmd.extend(["-m", markers])
    elif slow:
        cmd.extend(["-m", "slow or not slow"])

    print(f"Running pytest with command: {' '.join(cmd)}")
    result = subprocess.run(cmd, cwd=Path(__file__).parent)
    return result.returncode


def main():
    parser = argparse.ArgumentParser(description="Run the multiplier engine backend tests")
    parser.add_argument("--verbose", "-v", action="store_true", help="Verbose output")
    parser.add_argument("--coverage", "-c", action="store_true", help="Generate coverage report")
    parser.add_argument("--markers", "-m", help="Run tests with specific markers")
    parser.add_argument("--slow", action="store_true", help="Include the slow full runs")

    args = parser.parse_args()

    setup_test_environment()

    print("Multiplier Engine Backend Test Runner")
    print("=" * 40)

    code = run_pytest_tests(verbose=args.verbose, coverage=args.coverage, markers=args.markers, slow=args.slow)

    print("\n" + "=" * 40)
    if code == 0:
        print("🎉 All tests passed!")
        return 0
    print("💥 Some tests failed!")
    return 1


if __name__ == "__main__":
    sys.exit(main())
