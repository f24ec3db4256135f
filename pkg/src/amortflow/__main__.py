import sys

from amortflow.cli import main

sys.exit(main())
