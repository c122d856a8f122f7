import sys

import uvicorn

from app.cli import main


if __name__ == "__main__":
    if len(sys.argv) > 1:
        sys.exit(main())
    uvicorn.run("app.main:app", host="0.0.0.0", port=8000, reload=True)
