from z3ro_sim.cli import main
import sys

sys.exit(main())
