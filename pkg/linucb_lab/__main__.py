import sys

from linucb_lab.main import main

if __name__ == "__main__":
    sys.exit(main())
