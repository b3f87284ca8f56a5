from fastapi import FastAPI

import settings
from route.simulation_route import simulation_router

settings.configure_logging()

app = FastAPI(title="MIMO simulator")

app.include_router(simulation_router)
