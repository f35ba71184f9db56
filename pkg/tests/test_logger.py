from utility.logger import Logger


class TestLogger:
    def test_print_log_writes_to_file_only(self, tmp_path, capsys):
        logger = Logger(str(tmp_path / "nested" / "command.log"))
        logger.print_log("epoch", 3, "done")
        logger.close()
        assert "epoch 3 done" in (tmp_path / "nested" / "command.log").read_text(encoding="utf-8")
        assert capsys.readouterr().out == ""

    def test_print_console_writes_to_both(self, tmp_path, capsys):
        path = tmp_path / "command.log"
        logger = Logger(str(path))
        logger.print_console("training started")
        logger.print_log("file only")
        logger.close()
        out = capsys.readouterr().out
        assert "training started" in out and "file only" not in out
        text = path.read_text(encoding="utf-8")
        assert "training started" in text and "file only" in text

    def test_warning_is_tagged(self, tmp_path, capsys):
        path = tmp_path / "command.log"
        logger = Logger(str(path))
        logger.print_warning("coverage below target")
        logger.close()
        assert "WARNING - coverage below target" in capsys.readouterr().out
        assert "WARNING - coverage below target" in path.read_text(encoding="utf-8")

    def test_reopening_a_path_does_not_duplicate_lines(self, tmp_path):
        path = tmp_path / "command.log"
        first = Logger(str(path))
        second = Logger(str(path))
        second.print_log("once")
        second.close()
        first.close()
        assert path.read_text(encoding="utf-8").count("once") == 1
