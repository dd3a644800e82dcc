#!/usr/bin/env python
import sys


def main():
    """A shim for running harmcanon from the project root."""
    # This allows us to run the command-line tool without installing the package
    sys.path.insert(0, 'src')
    from harmcanon.workbench import main as workbench_main
    return workbench_main()

if __name__ == "__main__":
    sys.exit(main())
