import sys

from heis_imcf.cli import main

if __name__ == '__main__':
    sys.exit(main())
