import sys

from qmetro.cli import main

sys.exit(main())
