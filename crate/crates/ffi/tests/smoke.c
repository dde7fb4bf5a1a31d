#include <stdio.h>
#include <string.h>
#include "pide.h"

int main(void) {
    PideSession *s = NULL;
    if (pide_session_new("[print.auto_digits]\ndelay_ms = 0\n", &s) != PIDE_STATUS_OK) {
        fprintf(stderr, "new: %s\n", pide_last_error());
        return 1;
    }
    const char *text = "theory T imports begin eval 6 * 7 end";
    size_t bounds[2] = {0, strlen(text)};
    if (pide_session_insert(s, "T.thy", 0, text) != PIDE_STATUS_OK
        || pide_session_set_perspective(s, "T.thy", bounds, 1, false) != PIDE_STATUS_OK
        || pide_session_wait(s) != PIDE_STATUS_OK) {
        fprintf(stderr, "edit: %s\n", pide_last_error());
        return 1;
    }
    char *dump = NULL;
    if (pide_session_dump(s, "T.thy", true, &dump) != PIDE_STATUS_OK) {
        return 1;
    }
    fputs(dump, stdout);
    pide_string_free(dump);
    if (pide_session_insert(s, "T.thy", 999, "x") != PIDE_STATUS_BAD_EDIT || pide_last_error() == NULL) {
        return 1;
    }
    pide_session_free(s);
    return 0;
}
