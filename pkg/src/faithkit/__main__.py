import sys

from faithkit.harness.cli import main

sys.exit(main())
