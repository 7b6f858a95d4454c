default_app_config = 'wbic.apps.WbicConfig'
