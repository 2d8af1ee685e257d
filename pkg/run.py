from flask.cli import ScriptInfo

from scatline import create_app

app = create_app()

if __name__ == "__main__":
    app.cli.main(prog_name="scatline", obj=ScriptInfo(create_app=lambda: app))
