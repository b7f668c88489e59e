import sys

from gradfamily.main import main

sys.exit(main())
