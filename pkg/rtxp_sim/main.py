import sys

from rtxp_sim.clients.cli import main

if __name__ == "__main__":
    sys.exit(main())
