from config import Config
import os

__version__ = '0.4.0'


class HeisApp:
    """Application object holding the resolved configuration."""

    def __init__(self, name: str):
        self.name = name
        self.config = {}

    def config_from_object(self, obj):
        for key in dir(obj):
            if key.isupper():
                self.config[key] = getattr(obj, key)


def create_app(config_class=Config):
    app = HeisApp(__name__)
    app.config_from_object(config_class)

    from heis_imcf.services.observability import configure_structured_logging
    configure_structured_logging(app)

    # Jobs registry is populated on import
    from heis_imcf.services import job_handlers  # noqa: F401

    os.environ.setdefault('HEIS_IMCF_THREADS', str(app.config['THREADS']))
    return app
