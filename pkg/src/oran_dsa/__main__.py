import sys

from oran_dsa.cli import main

sys.exit(main())
