import sys

from electron_polariton_simulation.cli import main

sys.exit(main())
