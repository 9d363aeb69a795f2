"""
🧪 Fixture command handler

Handles make-fixture: generate, self-verify and write a synthetic dataset.
"""

import logging
from typing import Any, Dict, Optional

from core.errors import EXIT_OK, PipelineError, exit_code_for
from core.fixtures import load_fixture_spec, make_fixture

logger = logging.getLogger(__name__)


def cmd_make_fixture(out_dir: str, spec_path: Optional[str] = None) -> Dict[str, Any]:
    try:
        spec = load_fixture_spec(spec_path)
        summary = make_fixture(spec, out_dir)
        logger.info(f"✅ Fixture ready in {out_dir}")
        return dict(summary.to_dict(), success=True, exit_code=EXIT_OK)
    except PipelineError as e:
        logger.error(f"❌ {e}")
        return {"success": False, "error": str(e), "exit_code": exit_code_for(e)}
    except OSError as e:
        logger.error(f"❌ Cannot write fixture: {e}")
        return {"success": False, "error": str(e), "exit_code": exit_code_for(e)}
