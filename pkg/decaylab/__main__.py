import sys

from decaylab.main import main

sys.exit(main())
