import sys

from plate_obstacle.cli import main

sys.exit(main())
