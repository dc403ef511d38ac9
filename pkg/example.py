"""
Example script demonstrating how to use the EBDG solver.
"""
from pathlib import Path

from ebdg import EBDGSolver

# Path to your configuration file
CONFIG_PATH = "configuration.yaml"


def main():
    """Run the configured case."""
    print("=" * 60)
    print("EBDG Solver Example")
    print("=" * 60)

    try:
        solver = EBDGSolver(CONFIG_PATH)
        state = solver.run()

        print("\n" + "=" * 60)
        print(f"Run completed at t = {state.time:.6g} after {state.step} steps")
        print("=" * 60)
        print("\nResults are in the output directory.")
        print("Check the generated README.md file for a summary of the run.")

    except FileNotFoundError as e:
        print(f"Error: Configuration file not found: {e}")
    except Exception as e:
        print(f"Error: Run failed: {e}")
        raise


if __name__ == "__main__":
    # Clean up output directory of previous runs before running the solver
    output_dir = Path(__file__).parent / "output"
    if output_dir.exists():
        for file in output_dir.iterdir():
            file.unlink()
        output_dir.rmdir()

    main()
