from backend.db import DATABASE_URL, drop_db, engine, init_db
from sqlalchemy import text


def main() -> None:
    if DATABASE_URL.startswith("postgresql"):
        with engine.begin() as conn:
            conn.execute(text("DROP TABLE IF EXISTS experiment_rows, experiment_runs CASCADE"))
    else:
        drop_db()
    init_db()


if __name__ == "__main__":
    main()
