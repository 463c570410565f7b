import sys

from sandbox_runner import serve

if __name__ == "__main__":
    sys.exit(serve())
