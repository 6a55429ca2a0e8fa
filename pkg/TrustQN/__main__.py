import sys

from TrustQN.cli import main

sys.exit(main())
