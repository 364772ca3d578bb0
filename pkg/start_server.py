#!/usr/bin/env python3
"""
Start the Selective Acting API server
"""

import uvicorn

from selective_acting.settings import HOST, PORT, configure_logging

if __name__ == "__main__":
    configure_logging()
    uvicorn.run("selective_acting.main:app", host=HOST, port=PORT)
