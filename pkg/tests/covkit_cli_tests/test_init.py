import unittest


class TestInit(unittest.TestCase):
    def test_version_import(self):
        """Test that version can be imported."""
        from covkit_cli import __version__
        self.assertIsInstance(__version__, str)
        self.assertEqual(__version__, "1.0.0")

    def test_config_import(self):
        """Test that config can be imported."""
        from covkit_cli import config
        self.assertIsNotNone(config)

    def test_logger_import(self):
        """Test that logger can be imported."""
        from covkit_cli import logger
        self.assertEqual(logger.name, 'covkit_cli')

    def test_factory_import(self):
        """Test that CovKitFactory is re-exported from the library."""
        from covkit import CovKitFactory as library_factory
        from covkit_cli import CovKitFactory
        self.assertIs(CovKitFactory, library_factory)

    def test_all_exports(self):
        """Test that __all__ contains expected exports."""
        from covkit_cli import __all__
        expected_exports = ['config', 'logger', 'CovKitFactory']
        self.assertEqual(set(__all__), set(expected_exports))


if __name__ == '__main__':
    unittest.main()
