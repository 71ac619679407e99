from __future__ import annotations

import os
import secrets

from flask import Flask, jsonify, request, send_from_directory

from backend import __version__
from backend.db import SessionLocal, init_db
from backend.models import ExperimentRun
from backend.services import experiments, limits
from backend.services.storage import run_file


def create_app() -> Flask:

    app = Flask(__name__)
    app.secret_key = os.getenv("SECRET_KEY", secrets.token_hex(16))
    app.config.update(SEND_FILE_MAX_AGE_DEFAULT=0)

    init_db()

    handlers = {
        "limits": limits,
        "experiments": experiments,
    }

    @app.route("/")
    def index():
        return jsonify({"name": "hullwalk", "version": __version__, "modules": sorted(handlers)})

    @app.post("/api/appBackend")
    def app_backend():
        data = request.get_json(silent=True) or {}
        try:
            module = data.get("module")
            action = data.get("action")
            payload = data.get("payload") or {}

            handler = handlers.get(module)
            if not handler:
                return jsonify({"success": False, "error": f"Unknown module: {module}"})

            return jsonify(handler.handle(action, payload))
        except Exception as exc:
            app.logger.warning("appBackend %s/%s failed: %s", data.get("module"), data.get("action"), exc)
            return jsonify({"success": False, "error": str(exc)})

    @app.route("/runs/<run_id>/<filename>")
    def download_run_file(run_id: str, filename: str):
        db_session = SessionLocal()
        try:
            run = db_session.get(ExperimentRun, run_id)
            if not run or not run.output_dir:
                return ("Not found", 404)
            try:
                path = run_file(run.output_dir, filename)
            except ValueError:
                return ("Not found", 404)
            return send_from_directory(path.parent.resolve(), path.name, as_attachment=True)
        finally:
            db_session.close()

    return app


if __name__ == "__main__":
    create_app().run(host="0.0.0.0", port=5000, debug=True)
